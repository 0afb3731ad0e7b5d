# Repository layer for file persistence
