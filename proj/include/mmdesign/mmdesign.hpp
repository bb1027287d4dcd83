#pragma once

#include "errors.hpp"
#include "parallel.hpp"
#include "hrf.hpp"
#include "galois.hpp"
#include "design.hpp"
#include "glsmodel.hpp"
#include "criteria.hpp"
#include "search.hpp"
#include "io.hpp"
#include "config.hpp"
#include "report.hpp"
