#pragma once

#include "qsd/duality.hpp"
#include "qsd/errors.hpp"
#include "qsd/hedge.hpp"
#include "qsd/mc.hpp"
#include "qsd/models.hpp"
#include "qsd/numerics.hpp"
