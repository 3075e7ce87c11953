#pragma once

#include "ndepr/bessel.hpp"
#include "ndepr/commands.hpp"
#include "ndepr/config.hpp"
#include "ndepr/error.hpp"
#include "ndepr/fitting.hpp"
#include "ndepr/io.hpp"
#include "ndepr/least_squares.hpp"
#include "ndepr/linalg.hpp"
#include "ndepr/lindblad.hpp"
#include "ndepr/parallel.hpp"
#include "ndepr/sensor_drive.hpp"
#include "ndepr/spectra.hpp"
#include "ndepr/spin.hpp"
#include "ndepr/targets.hpp"
