#pragma once

#include "pseudorbit/arnoldi.hpp"
#include "pseudorbit/error.hpp"
#include "pseudorbit/graph.hpp"
#include "pseudorbit/map_model.hpp"
#include "pseudorbit/noise.hpp"
#include "pseudorbit/parallel.hpp"
#include "pseudorbit/partition.hpp"
#include "pseudorbit/pseudo_orbit.hpp"
#include "pseudorbit/rng.hpp"
#include "pseudorbit/simulate.hpp"
#include "pseudorbit/spectral.hpp"
#include "pseudorbit/transfer_matrix.hpp"
#include "pseudorbit/ulam.hpp"
