#pragma once

#include "bounds.hpp"
#include "experiment.hpp"
#include "extension.hpp"
#include "fiber.hpp"
#include "geometry.hpp"
#include "oracle.hpp"
#include "parallel.hpp"
#include "svalues.hpp"
