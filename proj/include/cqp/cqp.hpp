#pragma once

#include "cqp/error.hpp"
#include "cqp/qstate.hpp"
#include "cqp/type_expr.hpp"
#include "cqp/syntax.hpp"
#include "cqp/parser.hpp"
#include "cqp/types.hpp"
#include "cqp/semantics.hpp"
#include "cqp/plts.hpp"
#include "cqp/equiv.hpp"
#include "cqp/congruence.hpp"
#include "cqp/report.hpp"
