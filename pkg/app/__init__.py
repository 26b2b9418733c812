# app - command-line layer for harlearn
