from dmifilm.exceptions import ConfigValidationError, DmiFilmError, FieldValidationError
