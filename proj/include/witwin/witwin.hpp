#pragma once

#include <witwin/core.hpp>
#include <witwin/environment.hpp>
#include <witwin/event_queue.hpp>
#include <witwin/feature.hpp>
#include <witwin/io.hpp>
#include <witwin/metrics.hpp>
#include <witwin/mld_node.hpp>
#include <witwin/roaming.hpp>
#include <witwin/scenario.hpp>
#include <witwin/simulator.hpp>
#include <witwin/twin_model.hpp>
