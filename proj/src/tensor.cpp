#include "dewarp/tensor.hpp"

namespace dewarp {

// thread-local so eval workers can disable recording independently
bool& grad_mode_flag() {
  thread_local bool flag = true;
  return flag;
}

}  // namespace dewarp
