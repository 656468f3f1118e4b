#pragma once

#include <stdexcept>
#include <string>

namespace metaems {

// Base of every error thrown by the library. Callers that only need to
// distinguish "our" failures from std ones can catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define METAEMS_DEFINE_ERROR(Name)            \
  class Name : public Error {                 \
   public:                                    \
    using Error::Error;                       \
  }

METAEMS_DEFINE_ERROR(ShapeMismatch);
METAEMS_DEFINE_ERROR(EpisodeExhausted);
METAEMS_DEFINE_ERROR(InvalidRange);
METAEMS_DEFINE_ERROR(EmptyBatch);
METAEMS_DEFINE_ERROR(InsufficientData);
METAEMS_DEFINE_ERROR(EmptyPool);
METAEMS_DEFINE_ERROR(EmptyData);
METAEMS_DEFINE_ERROR(TooShort);
METAEMS_DEFINE_ERROR(EmptySeries);
METAEMS_DEFINE_ERROR(DegenerateBaseline);
METAEMS_DEFINE_ERROR(LengthMismatch);
METAEMS_DEFINE_ERROR(ConfigError);
METAEMS_DEFINE_ERROR(IoError);
METAEMS_DEFINE_ERROR(VersionMismatch);

#undef METAEMS_DEFINE_ERROR

}  // namespace metaems
