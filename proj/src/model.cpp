#include "dewarp/model.hpp"

namespace dewarp {

template class GbsuNet<float>;
template class GbsuNet<double>;

}  // namespace dewarp
