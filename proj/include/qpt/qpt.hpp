#pragma once

#include "qpt/types.hpp"
#include "qpt/collective_spin.hpp"
#include "qpt/ising_lattice.hpp"
#include "qpt/schedule.hpp"
#include "qpt/propagator.hpp"
#include "qpt/protocol.hpp"
#include "qpt/parallel.hpp"
#include "qpt/analysis.hpp"
#include "qpt/manifest.hpp"
#include "qpt/runner.hpp"
