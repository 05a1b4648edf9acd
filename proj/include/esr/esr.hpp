#pragma once

#include "esr/error.hpp"
#include "esr/numerics.hpp"
#include "esr/core.hpp"
#include "esr/gpp.hpp"
#include "esr/apparatus.hpp"
#include "esr/sim.hpp"
#include "esr/scenario.hpp"
#include "esr/commands.hpp"
