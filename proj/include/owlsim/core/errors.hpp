#pragma once

#include <stdexcept>
#include <string>

namespace owlsim {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define OWLSIM_DEFINE_ERROR(Name)                     \
    class Name : public Error {                       \
    public:                                           \
        using Error::Error;                           \
    }

OWLSIM_DEFINE_ERROR(SchemaError);
OWLSIM_DEFINE_ERROR(CycleError);
OWLSIM_DEFINE_ERROR(DanglingRefError);
OWLSIM_DEFINE_ERROR(UnknownAppError);
OWLSIM_DEFINE_ERROR(EpisodeTerminatedError);
OWLSIM_DEFINE_ERROR(ExhaustionError);
OWLSIM_DEFINE_ERROR(BackendError);
OWLSIM_DEFINE_ERROR(MalformedOutput);
OWLSIM_DEFINE_ERROR(EmptyGuidanceError);
OWLSIM_DEFINE_ERROR(MissingRoleRecordError);
OWLSIM_DEFINE_ERROR(EmptyClassError);
OWLSIM_DEFINE_ERROR(DegenerateBatchError);
OWLSIM_DEFINE_ERROR(ConfigError);

#undef OWLSIM_DEFINE_ERROR

}  // namespace owlsim
