#pragma once

#include "pgas/assembly.hpp"
#include "pgas/error.hpp"
#include "pgas/harness.hpp"
#include "pgas/increment.hpp"
#include "pgas/ir_text.hpp"
#include "pgas/isa.hpp"
#include "pgas/lowering.hpp"
#include "pgas/machine.hpp"
#include "pgas/memory.hpp"
#include "pgas/shared_pointer.hpp"
#include "pgas/translation.hpp"
