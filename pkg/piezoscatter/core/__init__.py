# Core domain types - Laplace parameter, material, mesh, errors, settings
