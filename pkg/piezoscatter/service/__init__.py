# Service layer for the numerical methods
