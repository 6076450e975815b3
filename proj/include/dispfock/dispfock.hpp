#pragma once

#include "dispfock/errors.hpp"
#include "dispfock/fock_space.hpp"
#include "dispfock/laguerre.hpp"
#include "dispfock/rng.hpp"
#include "dispfock/dynamics.hpp"
#include "dispfock/spin_ops.hpp"
#include "dispfock/protocol.hpp"
#include "dispfock/measurement.hpp"
#include "dispfock/least_squares.hpp"
#include "dispfock/analysis.hpp"
#include "dispfock/io.hpp"
#include "dispfock/svg.hpp"
#include "dispfock/experiment.hpp"
