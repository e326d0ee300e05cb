#pragma once

#include <geonull/error.hpp>
#include <geonull/exprcalc.hpp>
#include <geonull/numcore.hpp>
#include <geonull/tensor.hpp>
#include <geonull/metricspace.hpp>
#include <geonull/curvature.hpp>
#include <geonull/flows.hpp>
#include <geonull/splitting.hpp>
#include <geonull/report.hpp>
#include <geonull/verify.hpp>
