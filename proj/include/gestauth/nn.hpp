#pragma once

#include "gestauth/nn/checkpoint.hpp"
#include "gestauth/nn/gradcheck.hpp"
#include "gestauth/nn/graph.hpp"
#include "gestauth/nn/layers.hpp"
#include "gestauth/nn/ops.hpp"
#include "gestauth/nn/optim.hpp"
#include "gestauth/nn/tensor.hpp"
