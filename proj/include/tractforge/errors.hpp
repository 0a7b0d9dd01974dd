#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace tractforge {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define TRACTFORGE_ERROR(Name)                                      \
    struct Name : Error {                                           \
        explicit Name(const std::string& what) : Error(what) {}     \
    }

TRACTFORGE_ERROR(InvalidScalar);
TRACTFORGE_ERROR(DomainError);
TRACTFORGE_ERROR(ConvergenceError);
TRACTFORGE_ERROR(InvalidDatum);
TRACTFORGE_ERROR(InvalidGeometry);
TRACTFORGE_ERROR(NotInTract);
TRACTFORGE_ERROR(TruncationError);
TRACTFORGE_ERROR(DegenerateDistance);
TRACTFORGE_ERROR(NoBracket);
TRACTFORGE_ERROR(GeometryError);
TRACTFORGE_ERROR(IoError);

#undef TRACTFORGE_ERROR

struct BuildError : Error {
    BuildError(const std::string& what, double best_residual)
        : Error(what), residual(best_residual) {}
    double residual;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& field_name)
        : Error("invalid config field: " + field_name), field(field_name) {}
    std::string field;
};

}  // namespace tractforge
