import setuptools

with open("README.md", "r") as fh:
    long_description = fh.read()

setuptools.setup(
    name='clusterFX',
    version='0.1.0',
    description="clusterFX simulates an FX limit order book, encodes it as a depth-of-book feed, rebuilds the order flow from the feed and measures price clustering on both.",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=setuptools.find_packages(exclude=['examples', 'examples.*']),
    package_data={'clusterFX': ['Configs/*.json', 'Tests/golden/*']},
    install_requires=[
        'numpy',
        'pandas',
        'scipy',
        'matplotlib',
    ],
    entry_points={
        'console_scripts': ['clusterfx=clusterFX.Cli.cli:main'],
    },
    classifiers=[
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
    ],
)
