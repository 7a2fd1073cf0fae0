# We know that -45 and -101 are both negative, so their cube roots will also be negative.
# To find the integer between these two cube roots, we first need to find the cube roots themselves.
# Calculate the cube root of -45 and -101
root45 = round(-45 ** (1/3.0))
root101 = round(-101 ** (1/3.0))
# Now, we need to find the integer between these two roots.
# Since both roots are negative, we can use the min function to get the one that's closer to zero
ans = max(root45, root101)
print(ans)
