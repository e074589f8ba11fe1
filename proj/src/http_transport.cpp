#include <httplib.h>

#include <regex>

#include "owlsim/agents/protocol.hpp"
#include "owlsim/core/errors.hpp"

namespace owlsim::agents {

namespace {

class HttpTransport final : public Transport {
public:
    HttpTransport(std::string url, double timeout_s) : url_(std::move(url)), timeout_s_(timeout_s) {
        static const std::regex url_re(R"(^http://[^/\s]+$)");
        if (!std::regex_match(url_, url_re)) throw ConfigError("remote url must look like http://host:port: " + url_);
    }

    HttpResult post(const std::string& path, const std::string& body) const override {
        // One client per request keeps concurrent episodes independent.
        httplib::Client client(url_);
        const auto secs = static_cast<time_t>(timeout_s_);
        client.set_connection_timeout(secs, 0);
        client.set_read_timeout(secs, 0);
        auto res = client.Post(path, body, "application/json");
        if (!res) throw BackendError("no response from " + url_ + ": " + httplib::to_string(res.error()));
        return {res->status, res->body};
    }

private:
    std::string url_;
    double timeout_s_;
};

}  // namespace

std::shared_ptr<const Transport> make_http_transport(const std::string& url, double timeout_s) {
    return std::make_shared<HttpTransport>(url, timeout_s);
}

}  // namespace owlsim::agents
