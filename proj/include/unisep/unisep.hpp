#pragma once

#include "unisep/channels.hpp"
#include "unisep/codecs.hpp"
#include "unisep/core.hpp"
#include "unisep/errors.hpp"
#include "unisep/oracle.hpp"
#include "unisep/random.hpp"
#include "unisep/stack.hpp"
#include "unisep/trials.hpp"
#include "unisep/typecalc.hpp"
