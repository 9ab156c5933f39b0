"""Python package script"""

import setuptools
import kirchhoff

with open("README.rst") as readme_file:
    long_description = readme_file.read()

setuptools.setup(
    name="kirchhoff",
    version=kirchhoff.__version__,
    author=kirchhoff.__author__,
    author_email=kirchhoff.__email__,
    description=kirchhoff.__doc__.splitlines()[0].strip(),
    long_description=long_description,
    license=kirchhoff.__license__,
    keywords="kirchhoff nonlocal elliptic finite-difference sublinear",
    packages=setuptools.find_packages(exclude=["tests"]),
    python_requires=">=3.8",
    install_requires=[
        "numpy",
        "scipy>=1.12",
        "pyyaml",
        # Only used for the CLI:
        "cmd2",
        "rich",
    ],
    extras_require=dict(test=["hypothesis"]),
    classifiers=[
        "Development Status :: 4 - Beta",
        "Environment :: Console",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Natural Language :: English",
        "Operating System :: POSIX :: Linux",
        "Operating System :: MacOS",
        "Operating System :: Microsoft :: Windows :: Windows 10",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: Implementation :: CPython",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
)
