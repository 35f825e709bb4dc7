#pragma once

#include <stdexcept>
#include <string>

namespace halfcalc {

// Every failure raised by the library derives from halfcalc::error. The CLI
// maps usage_error to exit code 2 and everything else to exit code 3.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define HALFCALC_ERROR(name)                \
  class name : public error {               \
   public:                                  \
    using error::error;                     \
  }

HALFCALC_ERROR(shape_error);
HALFCALC_ERROR(singular_matrix_error);
HALFCALC_ERROR(domain_error);
HALFCALC_ERROR(validation_error);
HALFCALC_ERROR(instability_error);
HALFCALC_ERROR(size_error);
HALFCALC_ERROR(decay_error);
HALFCALC_ERROR(alignment_error);
HALFCALC_ERROR(path_inapplicable_error);
HALFCALC_ERROR(oracle_unavailable_error);
HALFCALC_ERROR(contour_placement_error);
HALFCALC_ERROR(rescaling_error);
HALFCALC_ERROR(usage_error);

#undef HALFCALC_ERROR

}  // namespace halfcalc
