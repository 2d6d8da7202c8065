#pragma once

#include <stdexcept>
#include <string>

namespace poscm {

enum class ErrorCode {
    InvalidArgument = 1,
    Domain = 2,
    Config = 3,
    Statistics = 4,
    Simulation = 5,
    Identification = 6,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

struct InvalidArgument : Error {
    explicit InvalidArgument(const std::string& what) : Error(ErrorCode::InvalidArgument, what) {}
};

// Intervention value or mechanism output outside a declared domain.
struct DomainError : Error {
    explicit DomainError(const std::string& what) : Error(ErrorCode::Domain, what) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(ErrorCode::Config, what) {}
};

struct StatisticsError : Error {
    explicit StatisticsError(const std::string& what) : Error(ErrorCode::Statistics, what) {}
};

struct SimulationError : Error {
    explicit SimulationError(const std::string& what) : Error(ErrorCode::Simulation, what) {}
};

struct IdentificationError : Error {
    explicit IdentificationError(const std::string& what) : Error(ErrorCode::Identification, what) {}
};

}  // namespace poscm
