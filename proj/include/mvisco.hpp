#pragma once

#include "mvisco/config.hpp"
#include "mvisco/diagnostics.hpp"
#include "mvisco/dynamics.hpp"
#include "mvisco/errors.hpp"
#include "mvisco/execute.hpp"
#include "mvisco/experiments.hpp"
#include "mvisco/field.hpp"
#include "mvisco/kernel.hpp"
#include "mvisco/memory.hpp"
#include "mvisco/setup.hpp"
#include "mvisco/tridiagonal.hpp"
