#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace psm {

// Trace and sample validation failures.
class ValidationError : public std::runtime_error {
public:
    enum class Kind {
        TooShort,
        NonMonotonicTime,
        NegativeTime,
        NonFinite,
        GyroOutOfRange,
        RateMismatch,
    };

    ValidationError(Kind kind, const std::string& msg, std::size_t index = 0,
                    std::string field = {}, double observed = 0.0, double nominal = 0.0)
        : std::runtime_error(msg),
          kind_(kind),
          index_(index),
          field_(std::move(field)),
          observed_(observed),
          nominal_(nominal) {}

    Kind kind() const noexcept { return kind_; }
    std::size_t index() const noexcept { return index_; }
    const std::string& field() const noexcept { return field_; }
    double observed() const noexcept { return observed_; }
    double nominal() const noexcept { return nominal_; }

private:
    Kind kind_;
    std::size_t index_;
    std::string field_;
    double observed_;
    double nominal_;
};

class DspError : public std::runtime_error {
public:
    enum class Kind { InvalidSpec, SignalTooShort, MissingOrientation };

    DspError(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

class DatasetError : public std::runtime_error {
public:
    enum class Kind { InvalidSpec, EmptyInput, AllOutOfRange, CorruptDataset, VersionMismatch };

    DatasetError(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

class ModelError : public std::runtime_error {
public:
    enum class Kind { InvalidParams, NonFiniteState };

    ModelError(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

class MetricsError : public std::runtime_error {
public:
    enum class Kind { LengthMismatch, InvalidWeights, InvalidBand, EmptyBand, AllZero, InvalidThresholds };

    MetricsError(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

class StreamError : public std::runtime_error {
public:
    enum class Kind { MalformedHeader, MalformedRow, SinkClosed, ConnectFailed, MissingArtifact };

    StreamError(Kind kind, const std::string& msg, std::size_t line_no = 0)
        : std::runtime_error(msg), kind_(kind), line_no_(line_no) {}
    Kind kind() const noexcept { return kind_; }
    std::size_t line_no() const noexcept { return line_no_; }

private:
    Kind kind_;
    std::size_t line_no_;
};

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace psm
