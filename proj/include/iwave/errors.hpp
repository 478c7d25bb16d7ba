#pragma once

#include <stdexcept>
#include <string>

namespace iwave {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StepUnderflow : public Error { public: using Error::Error; };
class NotRegularValue : public Error { public: using Error::Error; };
class LimitNotConverged : public Error { public: using Error::Error; };
class TooLargeForDense : public Error { public: using Error::Error; };
class IterationStalled : public Error { public: using Error::Error; };
class NearEigenvalue : public Error { public: using Error::Error; };
class NotCauchy : public Error { public: using Error::Error; };
class BackendDisagreement : public Error { public: using Error::Error; };
class ContourTooShort : public Error { public: using Error::Error; };
class CutoffMismatch : public Error { public: using Error::Error; };
class InvalidConfig : public Error { public: using Error::Error; };
class MissingMetric : public Error { public: using Error::Error; };

}  // namespace iwave
