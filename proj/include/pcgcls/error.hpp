#pragma once

#include <stdexcept>
#include <string>

namespace pcg {

// Broad failure classes. The CLI maps them onto exit codes:
// ConfigError -> 2, NumericError -> 4, everything else -> 3.
enum class ErrorCategory { Config, Data, Numeric };

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

#define PCG_DEFINE_ERROR(Name, Category)                                      \
    class Name : public Error {                                               \
    public:                                                                   \
        explicit Name(const std::string& what)                                \
            : Error(ErrorCategory::Category, what) {}                         \
    };

PCG_DEFINE_ERROR(ConfigError, Config)
PCG_DEFINE_ERROR(FormatError, Data)
PCG_DEFINE_ERROR(UnsupportedFormatError, Data)
PCG_DEFINE_ERROR(ParseError, Data)
PCG_DEFINE_ERROR(ValidationError, Data)
PCG_DEFINE_ERROR(DesignError, Data)
PCG_DEFINE_ERROR(DegenerateSignalError, Data)
PCG_DEFINE_ERROR(ShapeError, Data)
PCG_DEFINE_ERROR(IntegrityError, Data)
PCG_DEFINE_ERROR(VersionError, Data)
PCG_DEFINE_ERROR(NumericError, Numeric)

#undef PCG_DEFINE_ERROR

}  // namespace pcg
