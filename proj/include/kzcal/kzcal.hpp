#pragma once

#include "kzcal/error.hpp"
#include "kzcal/model.hpp"
#include "kzcal/random.hpp"
#include "kzcal/operators.hpp"
#include "kzcal/kz.hpp"
#include "kzcal/calogero_quantum.hpp"
#include "kzcal/calogero_classical.hpp"
#include "kzcal/identities.hpp"
