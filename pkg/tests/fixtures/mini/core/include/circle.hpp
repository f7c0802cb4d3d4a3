#pragma once
#include "shape.hpp"

namespace geo {

class Circle : public Shape {
public:
    explicit Circle(double r);
    double area() const override;
private:
    double radius_;
};

}  // namespace geo
