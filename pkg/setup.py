#!/usr/bin/env python

from setuptools import find_packages
from setuptools import setup
from subprocess import CalledProcessError
from subprocess import check_output
import os
import re

name = "sphere_surgery"

# Fetch version from git tags, and write to version.py.
# When git is not available, use stored version.py.
here = os.path.dirname(os.path.abspath(__file__))
git_tags = os.path.join(here, ".git", "refs", "tags")
version_py = os.path.join(here, name, 'version.py')


def tag_key(tag):
    return tuple(int(part) for part in re.findall(r'\d+', tag))


def get_git_tags():
    tags = [t for t in os.listdir(git_tags) if re.search(r'\d', t)]
    tags.sort(key=tag_key)
    return tags


def stored_version():
    with open(version_py, 'r') as fh:
        return fh.read().strip().split('=')[-1].replace('"', '').strip()


# try using git first
try:
    v = check_output(["git", "describe"], cwd=here).decode().strip()
    sections = v.lstrip('v').split('-', 3)
    version_git = sections.pop(0)
    if sections:
        incr = sections.pop(0)
        version_git += "." + incr
    if sections:
        version_git += "+" + sections.pop(0)
except (OSError, CalledProcessError):
    # look for git tags and use those
    try:
        version_git = get_git_tags()[-1].lstrip('v')
    except (OSError, IndexError):
        # fall back to the existing version.py file
        version_git = stored_version()

version_msg = "# Do not edit this file, versioning is governed by git tags"
with open(version_py, 'w') as fh:
    version_msg += os.linesep
    version_msg += "__version__ = \"%s\"" % (version_git)
    version_msg += os.linesep
    fh.write(version_msg)

with open(os.path.join(here, "README.md")) as fh:
    readme = fh.read()

description = (
    "Lattice experiments on removing the topological charges of "
    "sphere-valued Sobolev maps by ball surgery."
)


setup(
    name=name,
    version="{ver}".format(ver=version_git),
    description=description,
    long_description=readme,
    long_description_content_type="text/markdown",
    license="GPLv3",
    packages=find_packages(exclude=['tests']),
    include_package_data=True,
    python_requires=">=3.8",
    install_requires=[
        'numpy>=1.20',
        'scipy>=1.6',
        'networkx>=2.5',
    ],
    extras_require={
        'tests': ['pytest', 'flake8'],
    },
    entry_points={
        'console_scripts': [
            'ssurg = sphere_surgery.cli:main',
        ],
    },
    )
