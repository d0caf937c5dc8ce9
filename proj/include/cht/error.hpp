#pragma once

#include <stdexcept>
#include <string>

namespace cht {

// Root of every error the library throws. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DomainError : public Error { public: using Error::Error; };
class RangeError : public Error { public: using Error::Error; };
class ShapeError : public Error { public: using Error::Error; };
class SchemaError : public Error { public: using Error::Error; };
class DecodeError : public Error { public: using Error::Error; };
class MissingDataError : public Error { public: using Error::Error; };
class InsufficientDataError : public Error { public: using Error::Error; };
class CapacityError : public Error { public: using Error::Error; };
class IncompleteError : public Error { public: using Error::Error; };
class NumericError : public Error { public: using Error::Error; };

// Configuration problems carry the offending key so the CLI can report it.
class ConfigError : public Error {
public:
    ConfigError(std::string key, const std::string& what)
        : Error(key + ": " + what), key_(std::move(key)) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

}  // namespace cht
