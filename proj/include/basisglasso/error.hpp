#pragma once

#include <stdexcept>
#include <string>

namespace bgl {

// Failure categories map onto CLI exit codes.
enum class ErrorCategory { config = 2, data = 3, numeric = 4, nonconvergence = 5 };

class Error : public std::runtime_error
{
public:
    Error(ErrorCategory category, const std::string& what)
        : std::runtime_error(what), category_(category) {}

    ErrorCategory category() const noexcept { return category_; }

private:
    ErrorCategory category_;
};

struct ConfigError : Error
{
    explicit ConfigError(const std::string& what) : Error(ErrorCategory::config, what) {}
};

struct DataError : Error
{
    explicit DataError(const std::string& what) : Error(ErrorCategory::data, what) {}
};

/// Raised when a matrix expected to be symmetric positive definite is not.
struct NotSpdError : Error
{
    explicit NotSpdError(const std::string& what) : Error(ErrorCategory::numeric, what) {}
};

struct NumericError : Error
{
    explicit NumericError(const std::string& what) : Error(ErrorCategory::numeric, what) {}
};

struct NonconvergenceError : Error
{
    explicit NonconvergenceError(const std::string& what)
        : Error(ErrorCategory::nonconvergence, what) {}
};

} // namespace bgl
