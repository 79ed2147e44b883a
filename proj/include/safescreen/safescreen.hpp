#pragma once

#include "audit.hpp"
#include "compression.hpp"
#include "dataset.hpp"
#include "erm.hpp"
#include "errors.hpp"
#include "kernels.hpp"
#include "losses.hpp"
#include "op_counter.hpp"
#include "oracles.hpp"
#include "region.hpp"
#include "screening.hpp"
#include "solver.hpp"
#include "synthetic.hpp"
