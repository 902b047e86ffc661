#pragma once

#include "redr/autodiff/grad_check.hpp"
#include "redr/autodiff/ops.hpp"
#include "redr/autodiff/sgd.hpp"
#include "redr/autodiff/tape.hpp"
