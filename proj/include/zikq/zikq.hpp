#pragma once

#include "zikq/bandwidth.hpp"
#include "zikq/clinical.hpp"
#include "zikq/error.hpp"
#include "zikq/estimator.hpp"
#include "zikq/io.hpp"
#include "zikq/kernel.hpp"
#include "zikq/local_linear.hpp"
#include "zikq/normal.hpp"
#include "zikq/simulate.hpp"
#include "zikq/survival.hpp"
#include "zikq/svg.hpp"
