#!/usr/bin/env python3
"""
statmap 单元测试入口
"""

import unittest
import sys
import os

# 添加项目根目录到Python路径
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))


def run_tests(pattern: str = "test_*.py"):
    """发现并运行 tests/ 下的所有测试"""
    suite = unittest.TestLoader().discover(
        os.path.join(os.path.dirname(os.path.abspath(__file__)), "tests"), pattern=pattern)

    runner = unittest.TextTestRunner(verbosity=2)
    result = runner.run(suite)

    return result.wasSuccessful()


if __name__ == '__main__':
    print("Running statmap unit tests...")
    success = run_tests(sys.argv[1] if len(sys.argv) > 1 else "test_*.py")
    if success:
        print("All tests passed!")
        sys.exit(0)
    else:
        print("Some tests failed!")
        sys.exit(1)
