#pragma once

#include <stdexcept>
#include <string>

namespace halo {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class AuthError : public Error {
public:
    AuthError(const std::string& msg, std::string request_digest = {})
        : Error(msg), digest(std::move(request_digest)) {}
    std::string digest;
};

class RateLimitExhausted : public Error {
public:
    RateLimitExhausted(const std::string& msg, std::string request_digest = {})
        : Error(msg), digest(std::move(request_digest)) {}
    std::string digest;
};

class ProviderError : public Error {
public:
    ProviderError(const std::string& msg, std::string request_digest = {})
        : Error(msg), digest(std::move(request_digest)) {}
    std::string digest;
};

class NetworkError : public Error {
public:
    using Error::Error;
};

class MalformedResponse : public Error {
public:
    using Error::Error;
};

class RetrievalFailed : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class EmptyDataset : public Error {
public:
    using Error::Error;
};

class EmptyPool : public Error {
public:
    using Error::Error;
};

class MalformedExemplarFile : public Error {
public:
    using Error::Error;
};

class OptionCountOutOfRange : public Error {
public:
    using Error::Error;
};

class PreconditionViolation : public Error {
public:
    using Error::Error;
};

}  // namespace halo
