#pragma once

#include "msdon/csv.hpp"
#include "msdon/dataset.hpp"
#include "msdon/deeponet.hpp"
#include "msdon/dsp.hpp"
#include "msdon/error.hpp"
#include "msdon/excitation.hpp"
#include "msdon/neural.hpp"
#include "msdon/structural_dynamics.hpp"
#include "msdon/time_series.hpp"
#include "msdon/training.hpp"
