# Do not edit this file, versioning is governed by git tags
__version__ = "0.1.0"
