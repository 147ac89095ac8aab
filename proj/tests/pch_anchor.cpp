int mgvton_test_pch_anchor = 0;
