#pragma once

#include "privmon/common.hpp"
#include "privmon/detector.hpp"
#include "privmon/estimation.hpp"
#include "privmon/experiments.hpp"
#include "privmon/json_io.hpp"
#include "privmon/lifted.hpp"
#include "privmon/model.hpp"
#include "privmon/rng.hpp"
#include "privmon/special_functions.hpp"
#include "privmon/synthesis.hpp"
