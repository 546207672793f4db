#pragma once

#include <stdexcept>
#include <string>

namespace pgas {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class RangeError : public Error { using Error::Error; };
class ConsistencyError : public Error { using Error::Error; };
class EncodingError : public Error { using Error::Error; };
class ArithmeticError : public Error { using Error::Error; };

// The layout is not expressible with shifts and masks; callers fall back to
// the software incrementation.
class HwUnsupported : public Error { using Error::Error; };

class ConfigError : public Error { using Error::Error; };
class AllocationError : public Error { using Error::Error; };
class MemoryFault : public Error { using Error::Error; };
class AlignmentError : public Error { using Error::Error; };
class IllegalInstruction : public Error { using Error::Error; };
class UninitializedError : public Error { using Error::Error; };
class TimeoutError : public Error { using Error::Error; };
class ValidationError : public Error { using Error::Error; };
class ParseError : public Error { using Error::Error; };
class CorrectnessFailure : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };

}  // namespace pgas
