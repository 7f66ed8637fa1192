from setuptools import setup


with open("README.md", "r") as fh:
    long_description = fh.read()


if __name__ == "__main__":
    setup(name="exogait",
          version="0.1",
          description="Swing gait generation minimizing stance ankle torque for a planar lower-limb exoskeleton.",
          long_description=long_description,
          long_description_content_type="text/markdown",
          license="MIT",
          packages=["exogait"],
          install_requires=["numpy",
                            "scipy",
                            "pandas",
                            "xarray",
                            "netcdf4",
                            "pyyaml",
                            "pyarrow",
                            "tqdm",
                            "dask",
                            "distributed"],
          entry_points={"console_scripts": ["exogait=exogait.cli:main"]},
          )
