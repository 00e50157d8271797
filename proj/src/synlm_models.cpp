#include "syneval/synlm/models.hpp"

// Template definitions live in the header; this translation unit pins the
// common instantiations so dependent targets link faster.
namespace syneval::synlm {
template class RnngModel<float>;
template class PlmModel<float>;
}  // namespace syneval::synlm
