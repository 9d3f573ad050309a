#pragma once

#include "renyiqnn/qmath.hpp"
#include "renyiqnn/hamiltonians.hpp"
#include "renyiqnn/states.hpp"
#include "renyiqnn/models.hpp"
#include "renyiqnn/divergence.hpp"
#include "renyiqnn/swaptest.hpp"
#include "renyiqnn/plateau.hpp"
#include "renyiqnn/training.hpp"
#include "renyiqnn/config.hpp"
#include "renyiqnn/validation.hpp"
