# Data Transfer Objects (DTOs) for configuration files and reports
