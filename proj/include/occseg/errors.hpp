#pragma once

#include <stdexcept>
#include <string>

namespace occseg {

// Base of every error the library throws. Callers that only care about
// "something went wrong" catch this one.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Malformed or unsupported input bytes (images, model files, RLE strings).
class FormatError : public Error {
public:
    using Error::Error;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

// Raised when weights make the labelling energy non-submodular, i.e. the
// graph would need a negative capacity.
class RepresentabilityError : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual)
        : Error(what), residual_(residual) {}

    double residual() const { return residual_; }

private:
    double residual_;
};

class GenerationError : public Error {
public:
    using Error::Error;
};

// Text input that fails to parse. The message names the file and line.
class ParseError : public Error {
public:
    using Error::Error;
};

// An identifier that does not resolve (e.g. detection for an unknown image).
class ReferenceError : public Error {
public:
    using Error::Error;
};

}  // namespace occseg
