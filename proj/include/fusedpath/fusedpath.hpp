#pragma once

#include "fusedpath/csv.hpp"
#include "fusedpath/data_model.hpp"
#include "fusedpath/error.hpp"
#include "fusedpath/evaluation.hpp"
#include "fusedpath/export.hpp"
#include "fusedpath/fusion_graph.hpp"
#include "fusedpath/selection.hpp"
#include "fusedpath/solver.hpp"
