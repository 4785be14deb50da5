#pragma once

#include "nrps/demand.hpp"
#include "nrps/error.hpp"
#include "nrps/estimation.hpp"
#include "nrps/linalg.hpp"
#include "nrps/network_model.hpp"
#include "nrps/policies.hpp"
#include "nrps/pricing.hpp"
#include "nrps/rng.hpp"
#include "nrps/simulator.hpp"
