#pragma once

#include "blackstart/errors.hpp"
#include "blackstart/grid_model.hpp"
#include "blackstart/hvdc.hpp"
#include "blackstart/impedance.hpp"
#include "blackstart/io.hpp"
#include "blackstart/optimize.hpp"
#include "blackstart/powerflow.hpp"
#include "blackstart/simulate.hpp"
#include "blackstart/strength.hpp"
