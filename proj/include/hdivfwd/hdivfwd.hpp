#pragma once

#include "hdivfwd/amg.hpp"
#include "hdivfwd/analytic_sphere.hpp"
#include "hdivfwd/assembly.hpp"
#include "hdivfwd/cg_baseline.hpp"
#include "hdivfwd/error.hpp"
#include "hdivfwd/evaluation.hpp"
#include "hdivfwd/geometry.hpp"
#include "hdivfwd/hexmesh.hpp"
#include "hdivfwd/io.hpp"
#include "hdivfwd/krylov.hpp"
#include "hdivfwd/parallel.hpp"
#include "hdivfwd/saddle_solver.hpp"
#include "hdivfwd/sources.hpp"
#include "hdivfwd/sparse.hpp"
