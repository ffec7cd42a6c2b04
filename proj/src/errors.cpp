#include "abcbl/errors.hpp"

#include <exception>

namespace abcbl {

void rethrow_with_stage(const std::string& stage) {
  try {
    throw;
  } catch (const ValidationError& e) {
    throw ValidationError(stage + ": " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(stage + ": " + e.what());
  } catch (const IoError& e) {
    throw IoError(stage + ": " + e.what());
  } catch (const std::exception& e) {
    throw NumericalError(stage + ": " + e.what());
  }
}

}  // namespace abcbl
