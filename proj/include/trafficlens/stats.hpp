#pragma once

#include "trafficlens/stats/correlation.hpp"
#include "trafficlens/stats/linalg.hpp"
#include "trafficlens/stats/ols.hpp"
#include "trafficlens/stats/pca.hpp"
#include "trafficlens/stats/special.hpp"
