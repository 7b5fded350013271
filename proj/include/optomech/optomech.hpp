#pragma once

#include "optomech/constants.hpp"
#include "optomech/cavity.hpp"
#include "optomech/mechanics.hpp"
#include "optomech/spectrum.hpp"
#include "optomech/resonator.hpp"
#include "optomech/quantum_noise.hpp"
#include "optomech/qnd.hpp"
#include "optomech/montecarlo.hpp"
#include "optomech/characterization.hpp"
