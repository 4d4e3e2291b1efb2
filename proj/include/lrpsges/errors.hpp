#ifndef LRPSGES_ERRORS_HPP
#define LRPSGES_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace lrpsges {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define LRPSGES_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                        \
   public:                                                           \
    explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
  };

LRPSGES_DEFINE_ERROR(InvalidArgument)
LRPSGES_DEFINE_ERROR(DomainError)
LRPSGES_DEFINE_ERROR(SingularSubmatrix)
LRPSGES_DEFINE_ERROR(NonPositiveDefiniteInput)
LRPSGES_DEFINE_ERROR(NonPositiveResidualVariance)
LRPSGES_DEFINE_ERROR(IllegalPenalty)
LRPSGES_DEFINE_ERROR(InconsistentPdag)
LRPSGES_DEFINE_ERROR(TooLarge)
LRPSGES_DEFINE_ERROR(InsufficientSamples)
LRPSGES_DEFINE_ERROR(DegenerateK)
LRPSGES_DEFINE_ERROR(MismatchedDims)
LRPSGES_DEFINE_ERROR(EmptyTruth)
LRPSGES_DEFINE_ERROR(FormatError)

#undef LRPSGES_DEFINE_ERROR

/// Failure inside one stage of a multi-stage pipeline; the message carries
/// the stage name followed by the original error.
class StageError : public Error {
 public:
  StageError(const std::string& stage, const std::string& what)
      : Error("stage '" + stage + "': " + what), stage_(stage) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace lrpsges

#endif  // LRPSGES_ERRORS_HPP
