#include <doctest.h>
#include "test_util.hpp"
