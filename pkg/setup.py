import setuptools

with open('requirements.txt') as f:
    requirements = f.read().splitlines()

required = []
dependency_links = []

# Do not add to required lines pointing to Git repositories
EGG_MARK = '#egg='
for line in requirements:
    if not line.strip() or line.startswith('#'):
        continue
    if line.startswith('-e git:') or line.startswith('-e git+') or \
            line.startswith('git:') or line.startswith('git+'):
        if EGG_MARK in line:
            package_name = line[line.find(EGG_MARK) + len(EGG_MARK):]
            required.append(package_name)
            dependency_links.append(line)
        else:
            print('Dependency to a git repository should have the format:')
            print('git+ssh://git@github.com/xxxxx/xxxxxx#egg=package_name')
    else:
        required.append(line)

setuptools.setup(
    name="cam2traj",                        # This is the name of the package
    version="1.0.0",                        # Release.Major Feature.Minor Feature.Bug Fix
    description="Camera-to-trajectory driving: a small 2D driving simulator, an expert data pipeline, "
                "a numpy trajectory network with uncertainty and attention, PID tracking and closed-loop benchmarks",
    long_description=open("README.md").read(),
    long_description_content_type="text/markdown",
    packages=setuptools.find_packages(include=[
        "logger",
        "utils",
        "geometry",
        "sim_world",
        "expert",
        "dataset",
        "nn",
        "models",
        "controller",
        "evaluation",
        "cli",
    ]),    # List of all python modules to be installed
    include_package_data=True,
    package_data={"sim_world": ["maps/*.map"], "cli": ["example_config.yaml"]},
    entry_points={"console_scripts": ["cam2traj = cli.main:run"]},
    classifiers=[
        "Programming Language :: Python :: 3",
        "Operating System :: OS Independent",
    ],                                      # Information to filter the project on PyPi website
    python_requires='>=3.8',                # Minimum version requirement of the package
    install_requires=required,
    dependency_links=dependency_links
)
