"""
stairsim 入口点
"""

from stairsim.cli import main

if __name__ == "__main__":
    main()
