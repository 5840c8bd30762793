#include "persona/error.hpp"
