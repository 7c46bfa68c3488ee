#include "ei/demand.hpp"

namespace ei {

template struct BasicDemandCurve<double>;

} // namespace ei
