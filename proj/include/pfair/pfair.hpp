#pragma once

#include "pfair/core.hpp"
#include "pfair/data.hpp"
#include "pfair/model.hpp"
#include "pfair/attribution.hpp"
#include "pfair/two_sample.hpp"
#include "pfair/fairness.hpp"
#include "pfair/mitigation.hpp"
#include "pfair/experiments.hpp"
