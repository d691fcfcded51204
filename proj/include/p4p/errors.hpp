#pragma once

#include <stdexcept>
#include <string>

namespace p4p {

// Base for all toolkit errors.  ValidationError maps to CLI exit code 2,
// NumericalError to exit code 3.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ValidationError : Error {
    using Error::Error;
};
struct NumericalError : Error {
    using Error::Error;
};

#define P4P_VALIDATION_ERROR(Name)      \
    struct Name : ValidationError {     \
        using ValidationError::ValidationError; \
    }
#define P4P_NUMERICAL_ERROR(Name)       \
    struct Name : NumericalError {      \
        using NumericalError::NumericalError; \
    }

P4P_VALIDATION_ERROR(CountMismatch);
P4P_VALIDATION_ERROR(EmptyCell);
P4P_VALIDATION_ERROR(UnimputableCell);
P4P_VALIDATION_ERROR(EmptySample);
P4P_VALIDATION_ERROR(EmptyPool);
P4P_VALIDATION_ERROR(EmptyDistrict);
P4P_VALIDATION_ERROR(EmptyApplicantSet);
P4P_VALIDATION_ERROR(SchemaError);
P4P_VALIDATION_ERROR(IntegrityError);
P4P_VALIDATION_ERROR(EmptyFile);
P4P_VALIDATION_ERROR(ConfigError);

P4P_NUMERICAL_ERROR(NonMonotoneIndifference);
P4P_NUMERICAL_ERROR(NoConvergence);
P4P_NUMERICAL_ERROR(ZeroVariance);
P4P_NUMERICAL_ERROR(RankDeficient);
P4P_NUMERICAL_ERROR(StatisticFailure);

#undef P4P_VALIDATION_ERROR
#undef P4P_NUMERICAL_ERROR

} // namespace p4p
