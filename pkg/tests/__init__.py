# Test suite for kiesgcn
