#ifndef HCSPMM_HCSPMM_HPP
#define HCSPMM_HCSPMM_HPP

#include "cost_model.hpp"
#include "gnn.hpp"
#include "io.hpp"
#include "loa.hpp"
#include "matrix.hpp"
#include "oracle.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "selector.hpp"
#include "spmm.hpp"
#include "timing.hpp"
#include "types.hpp"
#include "window.hpp"

#endif
