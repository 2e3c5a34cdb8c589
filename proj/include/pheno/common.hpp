#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace pheno {

// Process exit codes used by the CLI; each error class maps onto one.
enum class ExitCode : int {
    kSuccess = 0,
    kUsage = 1,
    kData = 2,
    kNumerical = 3,
};

class Error : public std::runtime_error {
public:
    Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ExitCode code() const noexcept { return code_; }

private:
    ExitCode code_;
};

/// Bad configuration or parameter value supplied by the caller.
class ParameterError : public Error {
public:
    explicit ParameterError(const std::string& what) : Error(ExitCode::kUsage, what) {}
};

/// Input violates an operation's precondition (ordering, lengths, signs).
class PreconditionError : public Error {
public:
    explicit PreconditionError(const std::string& what) : Error(ExitCode::kData, what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ExitCode::kData, what) {}
};

class SchemaError : public Error {
public:
    explicit SchemaError(const std::string& what) : Error(ExitCode::kData, what) {}
};

/// Cholesky failure, divergence, negative variance and similar.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(ExitCode::kNumerical, what) {}
};

// ---------------------------------------------------------------------------
// Seeding

/// One step of the splitmix64 generator; used to derive independent seeds.
std::uint64_t splitmix64(std::uint64_t x);

/// 64-bit FNV-1a hash of a string.
std::uint64_t fnv1a(std::string_view s);

/// Seed for a named pipeline stage. Depends only on the master seed and the
/// stage name, so stages draw from unrelated streams.
std::uint64_t stage_seed(std::uint64_t master, std::string_view stage);

// ---------------------------------------------------------------------------
// Diagnostics

enum class LogLevel { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3, kSilent = 4 };

void set_log_level(LogLevel level);
LogLevel log_level();
void log(LogLevel level, std::string_view message);
inline void log_info(std::string_view m) { log(LogLevel::kInfo, m); }
inline void log_warn(std::string_view m) { log(LogLevel::kWarn, m); }

// ---------------------------------------------------------------------------
// Threads

/// Worker count from PHENO_THREADS (0 or unset = hardware concurrency).
unsigned worker_threads();

}  // namespace pheno
